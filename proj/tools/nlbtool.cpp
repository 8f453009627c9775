#include "nlb/cli.hpp"

int main(int argc, char** argv) { return nlb::cli::run_main(argc, argv); }
