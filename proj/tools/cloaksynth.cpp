#include "cloaksynth/cli.hpp"

int main(int argc, char** argv) { return cloak::cli_main(argc, argv); }
