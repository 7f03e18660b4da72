#include "squeeze_amp/cli/runner.hpp"

int main(int argc, char** argv) { return squeeze_amp::cli::main_entry(argc, argv); }
