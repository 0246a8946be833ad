#include "vqaflow/cli_commands.hpp"

int main(int argc, char** argv) { return vqaflow::cli::run_cli(argc, argv); }
