// Writes a synthetic corpus: fpkit_gen_corpus <dir> [seed] [n_fp] [n_benign]

#include "support/synthetic.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: " << argv[0] << " <dir> [seed] [n_fp] [n_benign]\n";
        return 2;
    }
    const auto seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 0;
    const auto n_fp = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 100;
    const auto n_benign = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 100;
    auto c = fpkit::testkit::generate_synthetic(seed, n_fp, n_benign);
    fpkit::write_corpus(c.manifest, argv[1]);
    std::cerr << c.manifest.scripts.size() << " scripts written to " << argv[1] << "\n";
    return 0;
}
