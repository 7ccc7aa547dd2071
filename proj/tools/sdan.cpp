#include "sdan/cli.hpp"

int main(int argc, char** argv) { return sdan::run_cli(argc, argv); }
