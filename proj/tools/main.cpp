#include "aggflow/cli.hpp"

int main(int argc, char** argv) { return aggflow::cli_main(argc, argv); }
