#include "jointmix/cli.hpp"

int main(int argc, char** argv) { return jointmix::run_cli(argc, argv); }
