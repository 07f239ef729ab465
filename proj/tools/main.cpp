#include "cli.hpp"

int main(int argc, char** argv) { return hcap::cli::run({argv + 1, argv + argc}); }
