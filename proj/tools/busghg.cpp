#include "busghg/cli.hpp"

int main(int argc, char** argv) { return busghg::cli::run_cli(argc, argv); }
