#include "hbvsde_cli/commands.hpp"

int main(int argc, char** argv) { return hbvsde::cli::run(argc, argv); }
