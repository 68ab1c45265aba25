#include "dcmmi/cli.hpp"

int main(int argc, char** argv) { return dcmmi::cli::main(argc, argv); }
