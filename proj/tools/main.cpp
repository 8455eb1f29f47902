#include "spacedit/cli.hpp"

int main(int argc, char** argv) { return spacedit::run_cli(argc, argv); }
