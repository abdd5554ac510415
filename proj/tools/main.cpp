#include "ddpq/cli.hpp"

int main(int argc, char** argv) { return ddpq::run_cli(argc, argv); }
