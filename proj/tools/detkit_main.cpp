#include "detkit/cli.hpp"

int main(int argc, char** argv) { return detkit::cli::run(argc, argv); }
