#include "cli.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "parsvd/comm.hpp"
#include "parsvd/datagen.hpp"
#include "parsvd/dsvd.hpp"
#include "parsvd/error.hpp"
#include "parsvd/io.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/streaming.hpp"
#include "parsvd/tcp.hpp"

extern char** environ;

namespace parsvd::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kModes = {"serial-batch", "serial-stream", "parallel-batch", "parallel-stream"};

bool is_parallel(const std::string& mode) { return mode.rfind("parallel-", 0) == 0; }
bool is_stream(const std::string& mode) { return mode.ends_with("-stream"); }

std::string env_name(const std::string& key) {
    std::string out = "PARSVD_";
    for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

// Registers every run option on `app`. Environment fallbacks are attached
// only to the user-facing parser, never to the config-file parser.
void bind_run_options(CLI::App& app, RunOptions& o, bool with_env) {
    auto opt = [&](CLI::Option* option, const std::string& key) {
        if (with_env) option->envname(key == "world-size" ? comm::kEnvWorldSize : env_name(key));
        return option;
    };
    opt(app.add_option("--mode", o.mode, "serial-batch | serial-stream | parallel-batch | parallel-stream")
            ->check(CLI::IsMember(kModes)),
        "mode");
    opt(app.add_option("--k", o.k_modes, "Number of modes K"), "k");
    opt(app.add_option("--ff", o.forget_factor, "Forget factor in (0, 1]"), "ff");
    opt(app.add_option("--batch", o.batch_columns, "Snapshots per streaming batch"), "batch");
    opt(app.add_option("--r1", o.r1, "Local right-vector truncation"), "r1");
    opt(app.add_option("--r2", o.r2, "Global mode truncation"), "r2");
    opt(app.add_flag("--randomized", o.randomized, "Use the randomized low-rank SVD"), "randomized");
    opt(app.add_option("--sketch-rank", o.sketch_rank, "Sketch target rank (serial-batch; 0 = K)"), "sketch-rank");
    opt(app.add_option("--oversampling", o.oversampling, "Sketch oversampling"), "oversampling");
    opt(app.add_option("--power-iters", o.power_iterations, "Sketch power iterations"), "power-iters");
    opt(app.add_option("--seed", o.seed, "Sketch seed"), "seed");
    opt(app.add_option("--world-size", o.world_size, "Number of ranks"), "world-size");
    opt(app.add_option("--transport", o.transport, "simulated | tcp")->check(CLI::IsMember({"simulated", "tcp"})),
        "transport");
    opt(app.add_option("--local-method", o.local_method, "svd | snapshots")->check(CLI::IsMember({"svd", "snapshots"})),
        "local-method");
    opt(app.add_option("--input", o.input, "Input matrix file"), "input");
    opt(app.add_option("--outdir", o.outdir, "Output directory"), "outdir");
    opt(app.add_option("--grid-length", o.grid_length, "Domain length used for the x column of modes.csv"),
        "grid-length");
    opt(app.add_option("--deadline-ms", o.deadline_ms, "Collective deadline in milliseconds"), "deadline-ms");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config file '" + path.string() + "' line " + std::to_string(lineno) +
                                  ": expected key=value");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

// Fills options that neither a flag nor the environment set.
void apply_config(CLI::App& parsed, RunOptions& o, const fs::path& path) {
    std::vector<std::string> args;
    for (const auto& [key, value] : read_config_file(path)) {
        const CLI::Option* option = parsed.get_option_no_throw("--" + key);
        if (option == nullptr)
            throw InvalidArgument("config file '" + path.string() + "': unknown key '" + key + "'");
        if (option->count() == 0) args.push_back("--" + key + "=" + value);
    }
    if (args.empty()) return;
    CLI::App scratch;
    bind_run_options(scratch, o, false);
    std::reverse(args.begin(), args.end());
    try {
        scratch.parse(args);
    } catch (const CLI::ParseError& e) {
        throw InvalidArgument("config file '" + path.string() + "': " + e.what());
    }
}

comm::CommOptions comm_options(const RunOptions& o) {
    comm::CommOptions opts;
    opts.deadline = std::chrono::milliseconds(o.deadline_ms);
    return opts;
}

ApmosConfig apmos_config(const RunOptions& o) {
    ApmosConfig cfg;
    cfg.r1 = o.r1;
    cfg.r2 = o.r2;
    cfg.k_modes = o.k_modes;
    cfg.use_randomized = o.randomized;
    cfg.sketch.oversampling = o.oversampling;
    cfg.sketch.power_iterations = o.power_iterations;
    cfg.sketch.seed = o.seed;
    cfg.local_method = o.local_method == "snapshots" ? LocalVectorMethod::Snapshots : LocalVectorMethod::Svd;
    return cfg;
}

StreamConfig stream_config(const RunOptions& o) {
    StreamConfig cfg;
    cfg.k_modes = o.k_modes;
    cfg.forget_factor = o.forget_factor;
    cfg.batch_columns = o.batch_columns;
    return cfg;
}

struct Result {
    DenseMatrix modes;
    std::vector<double> singular_values;
    std::vector<std::vector<double>> history;  // streaming modes only
};

void write_outputs(const RunOptions& o, const Result& r, const io::MatrixShape& shape) {
    std::error_code ec;
    fs::create_directories(o.outdir, ec);
    if (ec) throw IoError("cannot create output directory '" + o.outdir.string() + "': " + ec.message());

    BurgersConfig grid_cfg;
    grid_cfg.length = o.grid_length;
    grid_cfg.grid_points = r.modes.rows();
    std::vector<double> grid(r.modes.rows());
    for (Index i = 0; i < grid.size(); ++i) grid[i] = grid_cfg.grid_x(i);

    io::emit_singular_values(o.outdir / "singular_values.csv", r.singular_values);
    io::emit_modes(o.outdir / "modes.csv", grid, r.modes);
    for (Index j = 0; j < r.modes.cols(); ++j)
        io::emit_mode_plot(o.outdir / ("mode_" + std::to_string(j + 1) + ".svg"), grid, r.modes, j);
    if (is_stream(o.mode)) io::emit_singular_value_history(o.outdir / "singular_values_history.csv", r.history);

    const fs::path summary = o.outdir / "summary.txt";
    std::ofstream out(summary, std::ios::trunc);
    out << "mode=" << o.mode << "\nrows=" << shape.rows << "\ncols=" << shape.cols << "\nk=" << o.k_modes
        << "\nrandomized=" << (o.randomized ? "true" : "false") << '\n';
    if (is_stream(o.mode))
        out << "ff=" << io::format_real(o.forget_factor) << "\nbatch=" << o.batch_columns
            << "\niterations=" << r.history.size() << '\n';
    if (is_parallel(o.mode))
        out << "r1=" << o.r1 << "\nr2=" << o.r2 << "\nworld_size=" << o.world_size << "\ntransport=" << o.transport
            << "\nlocal_method=" << o.local_method << '\n';
    out.flush();
    if (!out) throw IoError("write to '" + summary.string() + "' failed");
}

Result run_serial(const RunOptions& o) {
    Result r;
    if (o.mode == "serial-batch") {
        const DenseMatrix a = io::read_matrix(o.input);
        SvdResult svd;
        if (o.randomized) {
            RandomSketchConfig sketch;
            sketch.target_rank = o.sketch_rank == 0 ? o.k_modes : o.sketch_rank;
            sketch.oversampling = o.oversampling;
            sketch.power_iterations = o.power_iterations;
            sketch.seed = o.seed;
            svd = truncate(low_rank_svd(a, sketch, false), o.k_modes);
        } else {
            svd = truncate(svd_full(a, false), o.k_modes);
        }
        r.modes = std::move(svd.u);
        r.singular_values = std::move(svd.s);
        return r;
    }
    const StreamConfig cfg = stream_config(o);
    auto source = io::BatchSource::from_file(o.input, o.batch_columns);
    auto first = source.next();
    if (!first) throw InvalidArgument("--input: matrix has no columns to stream");
    StreamState state = stream_initialize(*first, cfg);
    r.history.push_back(state.singular_values);
    while (auto batch = source.next()) {
        state = stream_incorporate(state, *batch, cfg);
        r.history.push_back(state.singular_values);
    }
    r.modes = std::move(state.modes);
    r.singular_values = std::move(state.singular_values);
    return r;
}

// One rank's share of a parallel run; the root returns the assembled result.
std::optional<Result> run_rank_body(comm::RankContext& ctx, const RunOptions& o, const io::MatrixShape& shape) {
    const auto sizes = row_partition_sizes(shape.rows, ctx.world_size());
    Index row_first = 0;
    for (comm::Rank r = 0; r < ctx.rank(); ++r) row_first += sizes[r];
    const Index row_count = sizes[ctx.rank()];
    const ApmosConfig cfg = apmos_config(o);

    LocalModes modes;
    std::vector<std::vector<double>> history;
    if (o.mode == "parallel-batch") {
        modes = apmos(ctx, io::read_rows(o.input, row_first, row_count), cfg);
    } else {
        auto source = io::BatchSource::from_file_rows(o.input, o.batch_columns, row_first, row_count);
        auto first = source.next();
        if (!first) throw InvalidArgument("--input: matrix has no columns to stream");
        modes = parallel_stream_initialize(ctx, *first, cfg);
        history.push_back(modes.s);
        while (auto batch = source.next()) {
            modes = parallel_stream_incorporate(ctx, modes, *batch, cfg, o.forget_factor);
            history.push_back(modes.s);
        }
    }
    auto stacked = gather_modes(ctx, modes);
    if (!stacked) return std::nullopt;
    return Result{std::move(*stacked), std::move(modes.s), std::move(history)};
}

std::vector<char*> c_strings(std::vector<std::string>& items) {
    std::vector<char*> out;
    for (auto& s : items) out.push_back(s.data());
    out.push_back(nullptr);
    return out;
}

// Forks `parsvd rank` for ranks 1..N-1 with the comm environment set.
std::vector<pid_t> spawn_ranks(const RunOptions& o, std::uint16_t port) {
    std::error_code ec;
    const fs::path self = fs::read_symlink("/proc/self/exe", ec);
    if (ec) throw Error("cannot locate own executable: " + ec.message());

    std::vector<pid_t> children;
    for (Index rank = 1; rank < o.world_size; ++rank) {
        std::vector<std::string> args = {self.string(), "rank"};
        for (auto& flag : o.to_flags()) args.push_back(flag);
        std::vector<std::string> env;
        for (char** e = environ; *e != nullptr; ++e) {
            const std::string entry = *e;
            if (!entry.starts_with("PARSVD_")) env.push_back(entry);
        }
        env.push_back(std::string(comm::kEnvRank) + "=" + std::to_string(rank));
        env.push_back(std::string(comm::kEnvWorldSize) + "=" + std::to_string(o.world_size));
        env.push_back(std::string(comm::kEnvRootAddr) + "=127.0.0.1:" + std::to_string(port));
        auto argv = c_strings(args);
        auto envp = c_strings(env);
        const pid_t pid = fork();
        if (pid < 0) throw Error("fork failed");
        if (pid == 0) {
            execve(argv[0], argv.data(), envp.data());
            _exit(127);
        }
        children.push_back(pid);
    }
    return children;
}

int reap(const std::vector<pid_t>& children, bool kill_first) {
    int worst = kOk;
    for (pid_t pid : children) {
        if (kill_first) kill(pid, SIGTERM);
        int status = 0;
        while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kConnectionFailure;
        if (code != kOk && worst == kOk) worst = code;
    }
    return worst;
}

Result run_parallel(const RunOptions& o, const io::MatrixShape& shape) {
    std::optional<Result> result;
    const auto world = static_cast<comm::Rank>(o.world_size);
    if (o.transport == "simulated") {
        comm::run_simulated(
            world,
            [&](comm::RankContext& ctx) {
                auto r = run_rank_body(ctx, o, shape);
                if (r) result = std::move(r);
            },
            comm_options(o));
        return std::move(*result);
    }

    comm::TcpListener listener({"127.0.0.1", 0});
    const auto children = spawn_ranks(o, listener.port());
    try {
        comm::RankContext ctx(comm::tcp_root(std::move(listener), world, comm_options(o)), comm_options(o));
        result = run_rank_body(ctx, o, shape);
    } catch (...) {
        reap(children, true);
        throw;
    }
    if (const int code = reap(children, false); code != kOk)
        throw ConnectionError("a spawned rank exited with status " + std::to_string(code));
    return std::move(*result);
}

void print_summary(const RunOptions& o, const Result& r) {
    std::cout << o.mode << ": " << r.modes.rows() << " x " << r.modes.cols() << " modes written to "
              << o.outdir.string() << "\n";
    for (Index j = 0; j < r.singular_values.size(); ++j)
        std::cout << "  s_" << j + 1 << " = " << io::format_real(r.singular_values[j]) << "\n";
}

int cmd_decompose(const RunOptions& o) {
    o.validate();
    const io::MatrixShape shape = io::read_shape(o.input);
    if (is_parallel(o.mode) && o.world_size > shape.rows)
        throw InvalidArgument("--world-size: " + std::to_string(o.world_size) + " ranks exceed the " +
                              std::to_string(shape.rows) + " rows of the input");
    const Result r = is_parallel(o.mode) ? run_parallel(o, shape) : run_serial(o);
    write_outputs(o, r, shape);
    print_summary(o, r);
    return kOk;
}

int cmd_rank(RunOptions o) {
    const comm::TcpEnvironment env = comm::tcp_environment();
    o.world_size = env.world_size;
    o.transport = "tcp";
    o.validate();
    if (!is_parallel(o.mode)) throw InvalidArgument("--mode: rank requires a parallel mode");
    const io::MatrixShape shape = io::read_shape(o.input);
    if (o.world_size > shape.rows)
        throw InvalidArgument(std::string(comm::kEnvWorldSize) + ": more ranks than input rows");
    comm::RankContext ctx(comm::tcp_from_environment(env, comm_options(o)), comm_options(o));
    auto r = run_rank_body(ctx, o, shape);
    if (r) {
        write_outputs(o, *r, shape);
        print_summary(o, *r);
    }
    return kOk;
}

std::uint64_t fnv1a64(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot reopen '" + path.string() + "'");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

int cmd_generate(const BurgersConfig& cfg, const fs::path& out) {
    const DenseMatrix a = burgers_matrix(cfg);
    io::write_matrix(out, a);
    char checksum[32];
    std::snprintf(checksum, sizeof checksum, "%016llx", static_cast<unsigned long long>(fnv1a64(out)));
    std::cout << "wrote " << out.string() << ": " << a.rows() << " x " << a.cols() << ", "
              << fs::file_size(out) << " bytes, fnv1a64 " << checksum << "\n";
    return kOk;
}

int cmd_compare(const fs::path& serial, const fs::path& parallel, double threshold, const fs::path& report) {
    const auto a = io::read_modes(serial / "modes.csv");
    const auto b = io::read_modes(parallel / "modes.csv");
    if (a.u.rows() != b.u.rows() || a.u.cols() != b.u.cols())
        throw InvalidArgument("mode files differ in shape: " + std::to_string(a.u.rows()) + " x " +
                              std::to_string(a.u.cols()) + " vs " + std::to_string(b.u.rows()) + " x " +
                              std::to_string(b.u.cols()));
    const fs::path out = report.empty() ? parallel / "comparison.csv" : report;
    const io::ComparisonReport rep = io::emit_comparison(out, a.u, b.u);
    for (const auto& m : rep.modes)
        std::cout << "mode " << m.mode << ": max_abs_error " << io::format_real(m.max_abs_error) << ", angle "
                  << io::format_real(m.angle) << " rad\n";
    std::cout << "subspace angle " << io::format_real(rep.subspace_angle) << " rad\n";
    const bool ok = rep.passes(threshold);
    std::cout << (ok ? "PASS" : "FAIL") << " at threshold " << io::format_real(threshold) << "\n";
    return ok ? kOk : kConfigError;
}

int report(const std::exception& e, int code) {
    std::cerr << "parsvd: " << e.what() << "\n";
    return code;
}

}  // namespace

void RunOptions::validate() const {
    if (std::find(kModes.begin(), kModes.end(), mode) == kModes.end())
        throw InvalidArgument("--mode: unknown mode '" + mode + "'");
    if (transport != "simulated" && transport != "tcp")
        throw InvalidArgument("--transport: unknown transport '" + transport + "'");
    if (k_modes == 0) throw InvalidArgument("--k: must be at least 1");
    if (!(forget_factor > 0.0 && forget_factor <= 1.0)) throw InvalidArgument("--ff: must lie in (0, 1]");
    if (batch_columns == 0) throw InvalidArgument("--batch: must be at least 1");
    if (input.empty()) throw InvalidArgument("--input: required");
    if (deadline_ms <= 0) throw InvalidArgument("--deadline-ms: must be positive");
    if (is_parallel(mode)) {
        if (world_size == 0) throw InvalidArgument("--world-size: must be at least 1");
        if (r1 == 0) throw InvalidArgument("--r1: must be at least 1");
        if (r2 == 0) throw InvalidArgument("--r2: must be at least 1");
        if (k_modes > r2) throw InvalidArgument("--k: K = " + std::to_string(k_modes) + " exceeds --r2");
        if (is_stream(mode) && r1 > batch_columns)
            throw InvalidArgument("--r1: exceeds the batch width " + std::to_string(batch_columns));
    }
    if (mode == "serial-batch" && randomized && sketch_rank != 0 && sketch_rank < k_modes)
        throw InvalidArgument("--sketch-rank: must be at least K");
}

std::vector<std::string> RunOptions::to_flags() const {
    return {"--mode=" + mode,
            "--k=" + std::to_string(k_modes),
            "--ff=" + io::format_real(forget_factor),
            "--batch=" + std::to_string(batch_columns),
            "--r1=" + std::to_string(r1),
            "--r2=" + std::to_string(r2),
            std::string("--randomized=") + (randomized ? "true" : "false"),
            "--sketch-rank=" + std::to_string(sketch_rank),
            "--oversampling=" + std::to_string(oversampling),
            "--power-iters=" + std::to_string(power_iterations),
            "--seed=" + std::to_string(seed),
            "--local-method=" + local_method,
            "--input=" + input.string(),
            "--outdir=" + outdir.string(),
            "--grid-length=" + io::format_real(grid_length),
            "--deadline-ms=" + std::to_string(deadline_ms)};
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Streaming, distributed and randomized SVD"};
    app.require_subcommand(1);

    BurgersConfig burgers;
    fs::path generate_out;
    auto* generate = app.add_subcommand("generate", "Write a viscous Burgers snapshot matrix");
    generate->add_option("--out", generate_out, "Output matrix file")->required();
    generate->add_option("--grid-points", burgers.grid_points, "Rows (grid points)");
    generate->add_option("--snapshots", burgers.n_snapshots, "Columns (snapshots)");
    generate->add_option("--reynolds", burgers.reynolds, "Reynolds number");
    generate->add_option("--length", burgers.length, "Domain length");
    generate->add_option("--t-final", burgers.t_final, "Final time");
    generate->add_option("--max-bytes", burgers.max_bytes, "Refuse matrices larger than this");

    RunOptions decompose_opts;
    fs::path decompose_config;
    auto* decompose = app.add_subcommand("decompose", "Run a serial or parallel decomposition");
    bind_run_options(*decompose, decompose_opts, true);
    decompose->add_option("--config", decompose_config, "key=value file (flags > env > file > defaults)")
        ->envname("PARSVD_CONFIG");

    RunOptions rank_opts;
    fs::path rank_config;
    auto* rank = app.add_subcommand("rank", "Join a tcp world described by PARSVD_* variables");
    bind_run_options(*rank, rank_opts, true);
    rank->add_option("--config", rank_config, "key=value file")->envname("PARSVD_CONFIG");

    fs::path serial_dir, parallel_dir, report_path;
    double threshold = 1e-6;
    auto* compare = app.add_subcommand("compare", "Compare the modes of two output directories");
    compare->add_option("--serial", serial_dir, "Reference output directory")->required();
    compare->add_option("--parallel", parallel_dir, "Output directory under test")->required();
    compare->add_option("--threshold", threshold, "Pass bound on error and angle");
    compare->add_option("--report", report_path, "Report CSV (default <parallel>/comparison.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (generate->parsed()) return cmd_generate(burgers, generate_out);
        if (compare->parsed()) return cmd_compare(serial_dir, parallel_dir, threshold, report_path);
        if (decompose->parsed()) {
            if (!decompose_config.empty()) apply_config(*decompose, decompose_opts, decompose_config);
            return cmd_decompose(decompose_opts);
        }
        if (!rank_config.empty()) apply_config(*rank, rank_opts, rank_config);
        return cmd_rank(rank_opts);
    } catch (const InvalidArgument& e) {
        return report(e, kConfigError);
    } catch (const CapacityError& e) {
        return report(e, kConfigError);
    } catch (const IoError& e) {
        return report(e, kIoError);
    } catch (const FormatError& e) {
        return report(e, kIoError);
    } catch (const TimeoutError& e) {
        return report(e, kTimeout);
    } catch (const ConnectionError& e) {
        return report(e, kConnectionFailure);
    } catch (const ProtocolError& e) {
        return report(e, kConnectionFailure);
    } catch (const std::exception& e) {
        return report(e, kNumericalFailure);
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace parsvd::cli
