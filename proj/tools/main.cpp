#include "igsearch/cli.hpp"

int main(int argc, char** argv) { return igsearch::run_cli(argc, argv); }
