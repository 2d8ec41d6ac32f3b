#include "cli_commands.hpp"

int main(int argc, char** argv) { return btc::run_cli(argc, argv); }
