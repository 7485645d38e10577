#include "cdfreg/cli.hpp"

int main(int argc, char** argv) { return cdfreg::cli::main(argc, argv); }
