#include "cli.h"

int main(int argc, char** argv) { return rqi::cli::run(argc, argv); }
