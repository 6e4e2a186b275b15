#include "otm_cli/commands.hpp"

int main(int argc, char** argv) { return otm::cli::main(argc, argv); }
