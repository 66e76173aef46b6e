#include "ipdma/cli.hpp"

int main(int argc, char** argv) { return ipdma::run_cli(argc, argv); }
