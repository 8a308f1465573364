#include "cli.hpp"

int main(int argc, char** argv) { return parsvd::cli::run(argc, argv); }
