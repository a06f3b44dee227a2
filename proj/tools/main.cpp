#include "crowdlf/cli.hpp"

int main(int argc, char** argv) { return crowdlf::cli_run(argc, argv); }
