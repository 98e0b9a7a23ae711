#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "waveblur/wavelet.hpp"

namespace waveblur {

namespace {

// Standard orthogonal lowpass tables, normalized so sum h = sqrt(2),
// sum h^2 = 1. Daubechies are extremal phase, Symmlets least asymmetric.
const std::vector<double> kHaar = {0.70710678118654757, 0.70710678118654757};

const std::map<unsigned, std::vector<double>> kDaubechies = {
    {2, {0.48296291314453416, 0.83651630373780794, 0.22414386804201339, -0.12940952255126037}},
    {3,
     {0.33267055295008263, 0.80689150931109255, 0.45987750211849154, -0.13501102001025458,
      -0.085441273882026658, 0.035226291885709533}},
    {4,
     {0.23037781330889651, 0.71484657055291567, 0.63088076792985892, -0.027983769416859854,
      -0.18703481171909309, 0.030841381835560764, 0.032883011666885197, -0.010597401785069032}},
    {5,
     {0.16010239797419293, 0.60382926979718965, 0.72430852843777294, 0.13842814590132074,
      -0.24229488706638203, -0.032244869584638375, 0.077571493840045719, -0.0062414902127982744,
      -0.012580751999081999, 0.0033357252854737712}},
    {6,
     {0.11154074335010947, 0.49462389039845306, 0.75113390802109536, 0.31525035170919763,
      -0.22626469396543983, -0.12976686756726194, 0.097501605587323043, 0.027522865530305727,
      -0.03158203931748603, 0.00055384220116149613, 0.0047772575109455108,
      -0.0010773010853084796}},
    {7,
     {0.077852054085009184, 0.39653931948191729, 0.72913209084623509, 0.46978228740519312,
      -0.14390600392856498, -0.22403618499387498, 0.071309219266830259, 0.080612609151083078,
      -0.038029936935014413, -0.016574541630666881, 0.01255099855609984, 0.00042957797292136651,
      -0.0018016407040474908, 0.00035371379997452024}},
    {8,
     {0.054415842243104008, 0.31287159091429995, 0.67563073629728976, 0.58535468365420673,
      -0.015829105256349306, -0.28401554296154691, 0.00047248457391328279, 0.12874742662047847,
      -0.017369301001807547, -0.044088253930794755, 0.013981027917398282, 0.0087460940474057766,
      -0.0048703529934515741, -0.00039174037337694705, 0.00067544940645056933,
      -0.00011747678412476953}},
    {9,
     {0.038077947363878345, 0.24383467461259034, 0.60482312369011115, 0.65728807805130052,
      0.13319738582500756, -0.29327378327917492, -0.096840783222976456, 0.14854074933810638,
      0.03072568147933338, -0.067632829061329974, 0.00025094711483145197, 0.022361662123679096,
      -0.0047232047577513972, -0.0042815036824634303, 0.0018476468830562265,
      0.00023038576352319597, -0.00025196318894271012, 3.9347320316271603e-05}},
    {10,
     {0.026670057900555554, 0.1881768000776915, 0.52720118893172563, 0.68845903945360354,
      0.28117234366057747, -0.24984642432731538, -0.19594627437737705, 0.12736934033579325,
      0.093057364603572348, -0.071394147166397082, -0.029457536821875813, 0.033212674059341002,
      0.0036065535669561697, -0.010733175483330575, 0.0013953517470529011, 0.0019924052951850561,
      -0.00068585669495971162, -0.00011646685512928545, 9.3588670320069592e-05,
      -1.3264202894521244e-05}},
};

const std::map<unsigned, std::vector<double>> kSymmlet = {
    {4,
     {0.032223100604051466, -0.012603967262031304, -0.099219543576633526, 0.29785779560530606,
      0.8037387518051321, 0.49761866763277501, -0.029635527646002493, -0.075765714789502212}},
    {5,
     {0.027333068344998768, 0.029519490925706261, -0.039134249302313844, 0.19939753397685558,
      0.72340769040404074, 0.63397896345679206, 0.016602105764510849, -0.17532808990805623,
      -0.021101834024689042, 0.019538882735249827}},
    {6,
     {0.015404109327044824, 0.0034907120842221626, -0.11799011114852002, -0.048311742585698057,
      0.49105594192797375, 0.78764114102865102, 0.33792942172816581, -0.072637522786376585,
      -0.021060292512370848, 0.044724901770781388, 0.0017677118642540077,
      -0.0078007083250323803}},
    {7,
     {0.012015419283549189, 0.017213376300804502, -0.064908003547188481, -0.064131289807385819,
      0.3602184609062602, 0.78192159329172817, 0.48361091568226772, -0.056804476889666972,
      -0.1010109208684203, 0.044742349468352378, 0.020464207577546033, -0.018126605131338461,
      -0.0032832978474668108, 0.0022918339540537714}},
    {8,
     {0.0018899503327676891, -0.00030292051472413309, -0.014952258337062199,
      0.0038087520138944896, 0.04913717967373029, -0.027219029917103486, -0.051945838107881802,
      0.36444189483617895, 0.777185751699628, 0.48135965125905339, -0.061273359067811076,
      -0.14329423835127267, 0.0076074873249766086, 0.031695087811525989, -0.00054213233180001072,
      -0.0033824159510050028}},
};

void verify_orthonormality(const std::vector<double>& h) {
    const std::size_t l = h.size();
    double s2 = 0.0;
    for (double c : h) s2 += c * c;
    if (std::abs(s2 - 1.0) > 1e-12)
        throw UnsupportedFilter("filter table failed unit-norm check");
    for (std::size_t k = 1; 2 * k < l; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + 2 * k < l; ++i) s += h[i] * h[i + 2 * k];
        if (std::abs(s) > 1e-12)
            throw UnsupportedFilter("filter table failed shift-orthogonality check");
    }
}

}  // namespace

std::string family_name(FilterFamily f) {
    switch (f) {
        case FilterFamily::Haar: return "haar";
        case FilterFamily::Daubechies: return "daubechies";
        case FilterFamily::Symmlet: return "symmlet";
    }
    return "?";
}

FilterPair make_filters(FilterFamily family, unsigned order) {
    const std::vector<double>* lo = nullptr;
    switch (family) {
        case FilterFamily::Haar:
            if (order != 1) throw UnsupportedFilter("Haar has order 1 only");
            lo = &kHaar;
            break;
        case FilterFamily::Daubechies: {
            auto it = kDaubechies.find(order);
            if (it == kDaubechies.end())
                throw UnsupportedFilter("Daubechies order must be in 2..10");
            lo = &it->second;
            break;
        }
        case FilterFamily::Symmlet: {
            auto it = kSymmlet.find(order);
            if (it == kSymmlet.end()) throw UnsupportedFilter("Symmlet order must be in 4..8");
            lo = &it->second;
            break;
        }
    }
    verify_orthonormality(*lo);

    FilterPair fp;
    fp.family = family;
    fp.order = order;
    fp.lowpass = *lo;
    const std::size_t l = lo->size();
    fp.highpass.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        double s = (i % 2 == 0) ? 1.0 : -1.0;
        fp.highpass[i] = s * fp.lowpass[l - 1 - i];
    }
    return fp;
}

FilterPair make_filters(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
    if (s == "haar") return make_filters(FilterFamily::Haar, 1);
    auto tail_order = [&](std::size_t prefix_len) -> unsigned {
        return static_cast<unsigned>(std::stoul(s.substr(prefix_len)));
    };
    try {
        if (s.rfind("db", 0) == 0) return make_filters(FilterFamily::Daubechies, tail_order(2));
        if (s.rfind("symmlet", 0) == 0) return make_filters(FilterFamily::Symmlet, tail_order(7));
        if (s.rfind("sym", 0) == 0) return make_filters(FilterFamily::Symmlet, tail_order(3));
    } catch (const std::logic_error&) {
        throw UnsupportedFilter("cannot parse filter name: " + name);
    }
    throw UnsupportedFilter("unknown filter name: " + name);
}

}  // namespace waveblur
