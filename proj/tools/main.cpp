#include "rild/experiment.hpp"

int main(int argc, char** argv) { return rild::cli_main(argc, argv); }
