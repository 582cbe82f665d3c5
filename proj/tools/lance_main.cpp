#include "lance/cli.hpp"

int main(int argc, char** argv) { return lance::run_cli(argc, argv); }
