#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd::cli {

// Stable exit codes for scripting.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kIoError = 2,
    kTimeout = 3,
    kConnectionFailure = 4,
    kNumericalFailure = 5,
};

struct RunOptions {
    std::string mode = "serial-batch";
    Index k_modes = 5;
    double forget_factor = 0.95;
    Index batch_columns = 100;
    Index r1 = 50;
    Index r2 = 5;
    bool randomized = false;
    Index sketch_rank = 0;  // 0: K for serial-batch; parallel modes pick r2 or K
    Index oversampling = 10;
    Index power_iterations = 1;
    std::uint64_t seed = 0;
    Index world_size = 1;
    std::string transport = "simulated";
    std::string local_method = "svd";
    std::filesystem::path input;
    std::filesystem::path outdir = ".";
    double grid_length = 1.0;
    long deadline_ms = 30000;

    // Throws InvalidArgument naming the offending flag.
    void validate() const;
    // --key=value flags reproducing these options (for spawned ranks).
    std::vector<std::string> to_flags() const;
};

// Whole command line, argv[0] included. Returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace parsvd::cli
