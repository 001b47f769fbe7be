#include "kinlab/harness.hpp"

int main(int argc, char** argv) { return kinlab::cli_main(argc, argv); }
