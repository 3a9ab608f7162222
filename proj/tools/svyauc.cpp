#include "svyauc/cli.hpp"

int main(int argc, char** argv) { return svyauc::cli::main(argc, argv); }
