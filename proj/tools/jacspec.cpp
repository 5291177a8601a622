#include "jacspec/harness/cli.hpp"

int main(int argc, char** argv) { return jacspec::harness::cli_main(argc, argv); }
