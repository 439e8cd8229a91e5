// Writes one of the synthetic test corpora as a TSV table with labels.
// Usage: make_corpus recovery|temporal SEED PATH

#include <cstdlib>
#include <iostream>
#include <string>

#include "corpora.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: make_corpus recovery|temporal SEED PATH\n";
        return 2;
    }
    const std::string kind = argv[1];
    const auto seed = std::strtoull(argv[2], nullptr, 10);
    hdphmm::ExpressionDataset ds;
    if (kind == "recovery") ds = corpora::recovery_corpus(seed);
    else if (kind == "temporal") ds = corpora::temporal_corpus(seed);
    else {
        std::cerr << "unknown corpus '" << kind << "'\n";
        return 2;
    }
    hdphmm::save_dataset(ds, argv[3], hdphmm::TextFormat::tsv);
    return 0;
}
