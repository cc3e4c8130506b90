#include "peanut/cli.hpp"

int main(int argc, char** argv) { return peanut::run_cli(argc, argv); }
