#include "specx/cli.hpp"

int main(int argc, char** argv) { return specx::cli::run(argc, argv); }
