#include "bacrs/cli.hpp"

int main(int argc, char** argv) { return bacrs::cli::run(argc, argv); }
