#include "modfnn/cli.hpp"

int main(int argc, char** argv) { return modfnn::run_cli(argc, argv); }
