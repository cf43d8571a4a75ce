#include "daa/cli.hpp"

int main(int argc, char** argv) { return daa::cli::run_cli(argc, argv); }
