#include "fbmint/cli.hpp"

int main(int argc, char** argv) { return fbmint::run_cli(argc, argv); }
