#include "irand/cli.hpp"

int main(int argc, char** argv) { return irand::cli::run(argc, argv); }
