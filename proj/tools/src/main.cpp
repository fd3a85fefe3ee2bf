#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sluxfer/cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("slu"));
  std::vector<std::string> args(argv + 1, argv + argc);
  return sluxfer::run_cli(args, std::cout, std::cerr);
}
