#include "sparsist/cli.hpp"

int main(int argc, char** argv)
{
    return sparsist::cli::main(argc, argv);
}
