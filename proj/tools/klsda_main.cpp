#include "commands.hpp"

int main(int argc, char** argv) { return klsda::cli::main(argc, argv); }
