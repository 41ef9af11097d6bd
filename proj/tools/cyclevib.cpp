#include "cyclevib/cli/commands.hpp"

int main(int argc, char** argv) { return cyclevib::cli::run_cli(argc, argv); }
