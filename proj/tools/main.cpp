#include "taskenc/cli/commands.hpp"

int main(int argc, char** argv) { return taskenc::cli::main_entry(argc, argv); }
