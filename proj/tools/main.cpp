#include "commands.hpp"

int main(int argc, char** argv) { return surfer::cli::run(argc, argv); }
