#include "rydgate/cli.hpp"

int main(int argc, char** argv) { return rydgate::cli_main(argc, argv); }
