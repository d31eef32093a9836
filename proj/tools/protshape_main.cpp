#include "protshape/cli.hpp"

int main(int argc, char** argv) { return protshape::cli::run(argc, argv); }
