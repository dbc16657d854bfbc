#include "sos/cli.hpp"

int main(int argc, char** argv) { return sos::run_cli(argc, argv); }
