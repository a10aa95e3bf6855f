#include "rhmm/cli.hpp"

int main(int argc, char** argv) { return rhmm::cli::main(argc, argv); }
