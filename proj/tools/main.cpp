#include <csignal>
#include <iostream>

#include "cli.hpp"

namespace {

extern "C" void on_sigint(int) { tikreg::cli::cancel_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::vector<std::string> args(argv + 1, argv + argc);
  return tikreg::cli::run(args, std::cout, std::cerr);
}
