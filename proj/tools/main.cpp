#include "mdtd_cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    // keep stdout for CSV
    spdlog::set_default_logger(spdlog::stderr_color_mt("mdtd"));
    std::vector<std::string> args(argv + 1, argv + argc);
    return mdtd::cli::run(args, std::cout, std::cerr);
}
