#include "morphforge/cli/app.hpp"

int main(int argc, char** argv) { return morphforge::cli::run_cli(argc, argv); }
