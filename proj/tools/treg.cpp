#include "treg/harness/cli.hpp"

int main(int argc, char** argv) { return treg::harness::cli_main(argc, argv); }
