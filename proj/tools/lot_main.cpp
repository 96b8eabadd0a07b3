#include "lot/cli.hpp"

int main(int argc, char** argv) { return lot::cli::run(argc, argv); }
