#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <mutex>

#include "parsvd/comm.hpp"
#include "parsvd/datagen.hpp"
#include "parsvd/dsvd.hpp"
#include "parsvd/error.hpp"
#include "parsvd/io.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/streaming.hpp"

namespace py = pybind11;
using namespace parsvd;

namespace {

using Array = py::array_t<double, py::array::f_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
    const auto rows = static_cast<Index>(a.shape(0)), cols = static_cast<Index>(a.shape(1));
    return DenseMatrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const DenseMatrix& m) {
    Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::array_t<double> to_vector(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::tuple svd_tuple(const SvdResult& r) {
    return py::make_tuple(to_array(r.u), to_vector(r.s), r.vt ? py::object(to_array(*r.vt)) : py::none());
}

RandomSketchConfig sketch(Index rank, Index oversampling, Index power_iterations, std::uint64_t seed) {
    RandomSketchConfig cfg;
    cfg.target_rank = rank;
    cfg.oversampling = oversampling;
    cfg.power_iterations = power_iterations;
    cfg.seed = seed;
    return cfg;
}

py::tuple stream_svd(const Array& a, Index k, double ff, Index batch) {
    StreamConfig cfg;
    cfg.k_modes = k;
    cfg.forget_factor = ff;
    cfg.batch_columns = batch;
    cfg.validate();
    auto src = io::BatchSource::from_matrix(to_matrix(a), batch);
    std::vector<std::vector<double>> history;
    StreamState st;
    {
        py::gil_scoped_release release;
        st = stream_initialize(*src.next(), cfg);
        history.push_back(st.singular_values);
        while (auto b = src.next()) {
            st = stream_incorporate(st, *b, cfg);
            history.push_back(st.singular_values);
        }
    }
    return py::make_tuple(to_array(st.modes), to_vector(st.singular_values), history);
}

// Row-partitions a over world_size simulated ranks and returns the stacked
// modes and singular values.
py::tuple parallel_svd(const Array& a, comm::Rank world_size, Index k, Index r1, Index r2, bool randomized,
                       std::uint64_t seed, double ff, Index batch) {
    const DenseMatrix m = to_matrix(a);
    ApmosConfig cfg;
    cfg.r1 = r1;
    cfg.r2 = r2;
    cfg.k_modes = k;
    cfg.use_randomized = randomized;
    cfg.sketch.seed = seed;
    const auto sizes = row_partition_sizes(m.rows(), world_size);
    DenseMatrix modes;
    std::vector<double> s;
    std::mutex mu;
    {
        py::gil_scoped_release release;
        comm::run_simulated(world_size, [&](comm::RankContext& ctx) {
            Index first = 0;
            for (comm::Rank r = 0; r < ctx.rank(); ++r) first += sizes[r];
            const DenseMatrix local = m.row_range(first, sizes[ctx.rank()]);
            LocalModes state;
            if (batch == 0) {
                state = apmos(ctx, local, cfg);
            } else {
                auto src = io::BatchSource::from_matrix(local, batch);
                state = parallel_stream_initialize(ctx, *src.next(), cfg);
                while (auto b = src.next()) state = parallel_stream_incorporate(ctx, state, *b, cfg, ff);
            }
            if (auto stacked = gather_modes(ctx, state)) {
                std::lock_guard lock(mu);
                modes = std::move(*stacked);
                s = state.s;
            }
        });
    }
    return py::make_tuple(to_array(modes), to_vector(s));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Streaming, distributed and randomized SVD";

    // Later registrations are tried first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    m.def(
        "qr",
        [](const Array& a) {
            const QrResult r = qr_factor(to_matrix(a));
            return py::make_tuple(to_array(r.q), to_array(r.r));
        },
        py::arg("a"), "Reduced QR with a non-negative diagonal of r. Returns (q, r).");

    m.def(
        "svd", [](const Array& a, bool want_vt) { return svd_tuple(svd_full(to_matrix(a), want_vt)); }, py::arg("a"),
        py::arg("want_vt") = true, "Thin SVD. Returns (u, s, vt or None).");

    m.def(
        "low_rank_svd",
        [](const Array& a, Index rank, Index oversampling, Index power_iterations, std::uint64_t seed) {
            return svd_tuple(low_rank_svd(to_matrix(a), sketch(rank, oversampling, power_iterations, seed)));
        },
        py::arg("a"), py::arg("rank"), py::arg("oversampling") = 10, py::arg("power_iterations") = 1,
        py::arg("seed") = 0, "Randomized rank-r SVD. Returns (u, s, vt).");

    m.def(
        "burgers_matrix",
        [](Index grid_points, Index snapshots, double reynolds, double length, double t_final) {
            BurgersConfig cfg;
            cfg.grid_points = grid_points;
            cfg.n_snapshots = snapshots;
            cfg.reynolds = reynolds;
            cfg.length = length;
            cfg.t_final = t_final;
            return to_array(burgers_matrix(cfg));
        },
        py::arg("grid_points") = 16384, py::arg("snapshots") = 800, py::arg("reynolds") = 1000.0,
        py::arg("length") = 1.0, py::arg("t_final") = 2.0, "Viscous Burgers snapshot matrix.");

    m.def(
        "synthetic_spectrum_matrix",
        [](Index rows, Index cols, const std::vector<double>& sigma, std::uint64_t seed) {
            return to_array(synthetic_spectrum_matrix(rows, cols, sigma, seed));
        },
        py::arg("rows"), py::arg("cols"), py::arg("sigma"), py::arg("seed") = 0);

    m.def("stream_svd", &stream_svd, py::arg("a"), py::arg("k") = 5, py::arg("ff") = 0.95, py::arg("batch") = 100,
          "Forget-factor streaming SVD over column batches. Returns (modes, s, history).");

    m.def("parallel_svd", &parallel_svd, py::arg("a"), py::arg("world_size") = 4, py::arg("k") = 2,
          py::arg("r1") = 50, py::arg("r2") = 5, py::arg("randomized") = false, py::arg("seed") = 0,
          py::arg("ff") = 1.0, py::arg("batch") = 0,
          "Distributed SVD over simulated ranks; batch > 0 streams. Returns (modes, s).");

    m.def(
        "write_matrix", [](const std::filesystem::path& path, const Array& a) { io::write_matrix(path, to_matrix(a)); },
        py::arg("path"), py::arg("a"));
    m.def(
        "read_matrix", [](const std::filesystem::path& path) { return to_array(io::read_matrix(path)); },
        py::arg("path"));

    m.def(
        "compare_modes",
        [](const Array& serial, const Array& parallel) {
            const io::ComparisonReport r = io::compare_modes(to_matrix(serial), to_matrix(parallel));
            std::vector<double> errors, angles;
            for (const auto& c : r.modes) {
                errors.push_back(c.max_abs_error);
                angles.push_back(c.angle);
            }
            py::dict d;
            d["max_abs_error"] = errors;
            d["angle"] = angles;
            d["subspace_angle"] = r.subspace_angle;
            return d;
        },
        py::arg("serial"), py::arg("parallel"), "Sign-aligned per-mode errors and the subspace angle.");
}
