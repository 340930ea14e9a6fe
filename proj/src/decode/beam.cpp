#include "pianoscribe/decode/beam.hpp"

#include <algorithm>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::decode {

Sequence Sequence::push(const PitchSet& frame) const
{
    return Sequence(std::make_shared<const Node>(Node{frame, tail_, size() + 1}));
}

std::vector<PitchSet> Sequence::frames() const
{
    std::vector<PitchSet> out(size());
    std::size_t i = out.size();
    for (const Node* n = tail_.get(); n != nullptr; n = n->prev.get()) out[--i] = n->frame;
    return out;
}

int compare_sequences(const Sequence& a, const Sequence& b)
{
    if (a.size() != b.size()) {
        const auto fa = a.frames();
        const auto fb = b.frames();
        const std::size_t n = std::min(fa.size(), fb.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (fa[i] < fb[i]) return -1;
            if (fb[i] < fa[i]) return 1;
        }
        return fa.size() < fb.size() ? -1 : 1;
    }
    // Equal lengths: walk back to the shared prefix, remembering the earliest
    // differing frame.
    int result = 0;
    const Sequence::Node* x = a.tail_.get();
    const Sequence::Node* y = b.tail_.get();
    while (x != y) {
        if (x->frame < y->frame) {
            result = -1;
        } else if (y->frame < x->frame) {
            result = 1;
        }
        x = x->prev.get();
        y = y->prev.get();
    }
    return result;
}

HashKey::HashKey(Sequence seq, std::size_t n) : seq_(std::move(seq)), n_(std::min(n, seq_.size())) {}

std::vector<PitchSet> HashKey::frames() const
{
    auto all = seq_.frames();
    return {all.end() - static_cast<std::ptrdiff_t>(n_), all.end()};
}

bool operator<(const HashKey& a, const HashKey& b)
{
    if (a.n_ != b.n_) return a.n_ < b.n_;
    const Sequence::Node* x = a.seq_.tail_.get();
    const Sequence::Node* y = b.seq_.tail_.get();
    for (std::size_t i = 0; i < a.n_ && x != y; ++i) {
        if (x->frame < y->frame) return true;
        if (y->frame < x->frame) return false;
        x = x->prev.get();
        y = y->prev.get();
    }
    return false;
}

HashKey hash_last_n(const Sequence& s, std::size_t n)
{
    if (n == 0) throw ConfigError("hash_last_n: n must be at least 1");
    return HashKey(s, n);
}

bool better(double score_a, const Sequence& a, double score_b, const Sequence& b)
{
    if (score_a != score_b) return score_a > score_b;
    return compare_sequences(a, b) < 0;
}

bool HashedBeam::Worse::operator()(const Ref& a, const Ref& b) const
{
    if (a.score != b.score) return a.score < b.score;
    const int c = compare_sequences(*a.seq, *b.seq);
    if (c != 0) return c > 0;
    return a.id > b.id;
}

HashedBeam::HashedBeam(std::size_t width, std::size_t chain, std::size_t hash_n)
    : width_(width), chain_(chain), hash_n_(hash_n)
{
    if (width == 0 || chain == 0 || hash_n == 0) {
        throw ConfigError("HashedBeam: width, chain and hash_n must be at least 1");
    }
}

void HashedBeam::remove(Ref victim)
{
    const auto it = entries_.find(victim.id);
    auto key_it = by_key_.find(hash_last_n(it->second.seq, hash_n_));
    key_it->second.erase(victim);
    if (key_it->second.empty()) by_key_.erase(key_it);
    queue_.erase(victim);
    entries_.erase(it);
}

bool HashedBeam::insert(BeamEntry entry)
{
    HashKey key = hash_last_n(entry.seq, hash_n_);
    const Ref probe{entry.score, &entry.seq, next_id_};
    auto key_it = by_key_.find(key);

    const bool fits_queue = queue_.size() < width_ || Worse{}(*queue_.begin(), probe);
    const bool fits_key =
        key_it == by_key_.end() || key_it->second.size() < chain_ || Worse{}(*key_it->second.begin(), probe);
    if (!fits_queue || !fits_key) return false;

    if (key_it != by_key_.end() && key_it->second.size() >= chain_) {
        remove(*key_it->second.begin());
    } else if (queue_.size() >= width_) {
        remove(*queue_.begin());
    }

    const std::uint64_t id = next_id_++;
    auto [slot, inserted] = entries_.emplace(id, std::move(entry));
    const Ref ref{slot->second.score, &slot->second.seq, id};
    queue_.insert(ref);
    by_key_[std::move(key)].insert(ref);
    return true;
}

const BeamEntry& HashedBeam::best() const
{
    if (queue_.empty()) throw Error("HashedBeam: best() on an empty beam");
    return entries_.at(queue_.rbegin()->id);
}

std::vector<BeamEntry> HashedBeam::entries_best_first() const
{
    std::vector<BeamEntry> out;
    out.reserve(queue_.size());
    for (auto it = queue_.rbegin(); it != queue_.rend(); ++it) out.push_back(entries_.at(it->id));
    return out;
}

bool HashedBeam::audit(std::string* why) const
{
    auto fail = [&](std::string msg) {
        if (why != nullptr) *why = std::move(msg);
        return false;
    };
    if (queue_.size() > width_) return fail("queue holds " + std::to_string(queue_.size()) + " > w");
    if (queue_.size() != entries_.size()) return fail("queue and entry table sizes differ");
    std::size_t keyed = 0;
    for (const auto& [key, q] : by_key_) {
        if (q.empty()) return fail("empty hash queue left behind");
        if (q.size() > chain_) return fail("hash queue holds " + std::to_string(q.size()) + " > k");
        for (const Ref& r : q) {
            const auto it = entries_.find(r.id);
            if (it == entries_.end()) return fail("hash queue refers to a removed entry");
            if (!(hash_last_n(it->second.seq, hash_n_) == key)) return fail("entry filed under the wrong key");
            if (queue_.find(r) == queue_.end()) return fail("hashed entry missing from the global queue");
        }
        keyed += q.size();
    }
    if (keyed != queue_.size()) return fail("entries not in exactly one hash queue");
    return true;
}

} // namespace pianoscribe::decode
