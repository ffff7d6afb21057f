#include "navqa/cli.hpp"

int main(int argc, char** argv) { return navqa::cli::run(argc, argv); }
