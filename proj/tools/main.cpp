#include "safecert/cli.hpp"

int main(int argc, char** argv) { return safecert::cli::run(argc, argv); }
