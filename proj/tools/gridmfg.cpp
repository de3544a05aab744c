#include "gridmfg/cli.hpp"

int main(int argc, char** argv) { return gridmfg::run_cli(argc, argv); }
