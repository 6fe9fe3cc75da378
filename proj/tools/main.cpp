#include "blockspike/cli.hpp"

int main(int argc, char** argv) { return blockspike::cli::run(argc, argv); }
