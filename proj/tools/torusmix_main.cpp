#include "torusmix/cli.hpp"

int main(int argc, char** argv) { return torusmix::run_cli(argc, argv); }
