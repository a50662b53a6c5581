#include "cord_cli/cli.hpp"

int main(int argc, char** argv) { return cord::cli::dispatch(argc, argv); }
