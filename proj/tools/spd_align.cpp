#include "spdalign/cli.hpp"

int main(int argc, char** argv) { return spdalign::run_cli(argc, argv); }
