#include "glstar/cli.hpp"

int main(int argc, char** argv) { return glstar::run(argc, argv); }
