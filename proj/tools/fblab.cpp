#include "fblab/cli.hpp"

int main(int argc, char** argv) { return fblab::cli::main(argc, argv); }
