#include "evtriage/cli.hpp"

int main(int argc, char** argv) { return evtriage::cli::run(argc, argv); }
