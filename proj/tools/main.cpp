#include "cli.hpp"

int main(int argc, char** argv) { return viscogs::cli::run_cli(argc, argv); }
