#include "redline/cli.hpp"

int main(int argc, char** argv) { return redline::run_cli(argc, argv); }
