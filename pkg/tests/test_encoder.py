import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentlens.cctree import CodeTree, ContractNode, FunctionLeaf, SourceDocument, extract_tree
from intentlens.encoder import (
    EncoderParams,
    Vocabulary,
    average_tokens,
    backward_buckets,
    bucket_lists,
    dan_forward,
    embed_contract,
    embed_function,
    forward_buckets,
    tokenize,
)
from intentlens.errors import EmptyContractError, EmptyFunctionError, NumericFaultError
from intentlens.numerics import finite_diff_check


@pytest.fixture(scope="module")
def small():
    return EncoderParams.initialize(seed=3, vocab_size=64, dim=6, layers=2, out_dim=5)


def tree_of(*bodies):
    leaves = tuple(FunctionLeaf("function", b.split("{")[0].strip(), b) for b in bodies)
    return CodeTree(root="\n".join(bodies), contracts=(ContractNode("contract", "A", leaves),))


class TestTokenize:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("function setFeeAddress(address)", ["function", "set", "fee", "address", "(", "address", ")"]),
            ("a a a", ["a", "a", "a"]),
            ("_max_tx_amount", ["max", "tx", "amount"]),
            ("uint256", ["uint", "256"]),
            ("ERC20Token", ["erc", "20", "token"]),
            ("HTMLParser", ["html", "parser"]),
            ("x+=1;", ["x", "+", "=", "1", ";"]),
            ("_;", ["_", ";"]),
        ],
    )
    def test_examples(self, text, expected):
        assert tokenize(text) == expected

    def test_blacklist_tokens(self):
        tokens = tokenize("require(!isBlacklisted[sender])")
        assert "blacklisted" in tokens and "sender" in tokens

    @pytest.mark.parametrize("text", ["", "   \n\t"])
    def test_empty(self, text):
        with pytest.raises(EmptyFunctionError):
            tokenize(text)

    @given(st.text(min_size=1, max_size=60).filter(lambda s: s.strip()))
    def test_tokens_are_lowercase_and_nonblank(self, text):
        for tok in tokenize(text):
            assert tok and not tok.isspace()
            assert tok == tok.lower()


class TestVocabulary:
    def test_pure_function_of_token_and_seed(self):
        a, b = Vocabulary(8192, 7), Vocabulary(8192, 7)
        assert a.bucket("fee") == b.bucket("fee")
        assert 0 <= a.bucket("fee") < 8192

    def test_seed_changes_mapping(self):
        words = [f"w{i}" for i in range(50)]
        assert Vocabulary(8192, 1).buckets(words).tolist() != Vocabulary(8192, 2).buckets(words).tolist()


class TestAverageTokens:
    def test_single_token_is_its_row(self, small):
        row = small.word_table[small.vocab.bucket("fee")]
        np.testing.assert_array_equal(average_tokens(["fee"], small), row.astype(np.float64))

    def test_two_tokens_mean(self, small):
        e1 = small.word_table[small.vocab.bucket("fee")].astype(np.float64)
        e2 = small.word_table[small.vocab.bucket("mint")].astype(np.float64)
        np.testing.assert_allclose(average_tokens(["fee", "mint"], small), (e1 + e2) / 2, rtol=0, atol=1e-15)

    @given(st.permutations(["set", "fee", "(", "address", ")", "fee"]))
    def test_permutation_invariant(self, tokens):
        params = EncoderParams.initialize(seed=3, vocab_size=64, dim=6, layers=2, out_dim=5)
        ref = average_tokens(["set", "fee", "(", "address", ")", "fee"], params)
        np.testing.assert_allclose(average_tokens(list(tokens), params), ref, rtol=0, atol=1e-12)

    def test_empty(self, small):
        with pytest.raises(EmptyFunctionError):
            average_tokens([], small)


class TestDanForward:
    def test_zero_output_layer_is_uniform(self):
        p = EncoderParams.initialize(seed=0, vocab_size=8, dim=3, layers=1, out_dim=4)
        p.arrays["softmax.W"][:] = 0
        p.arrays["softmax.b"][:] = 0
        np.testing.assert_allclose(dan_forward(np.ones(3), p), [0.25] * 4, atol=1e-15)

    def test_logit_shift_invariance(self, small):
        f0 = average_tokens(tokenize("function mint(uint256)"), small)
        shifted = EncoderParams({k: v.copy() for k, v in small.arrays.items()}, small.vocab)
        shifted.arrays["softmax.b"] += np.float32(3.0)
        np.testing.assert_allclose(dan_forward(f0, shifted), dan_forward(f0, small), atol=1e-9)

    def test_tanh_identity_layer_keeps_zero(self):
        p = EncoderParams.initialize(seed=0, vocab_size=8, dim=2, layers=1, out_dim=3)
        p.arrays["ff.0.W"][:] = np.eye(2)
        p.arrays["ff.0.b"][:] = 0
        p.arrays["word_table"][0] = 0
        _, (_, acts, _) = forward_buckets([np.array([0])], p)
        np.testing.assert_array_equal(acts[-1][0], [0.0, 0.0])

    def test_nan_names_layer(self, small):
        bad = EncoderParams({k: v.copy() for k, v in small.arrays.items()}, small.vocab)
        bad.arrays["ff.1.W"][0, 0] = np.nan
        with pytest.raises(NumericFaultError, match="layer 2"):
            dan_forward(np.ones(6), bad)

    def test_l2_output_mode(self):
        p = EncoderParams.initialize(seed=0, vocab_size=16, dim=4, layers=2, out_dim=6, output="l2")
        out = embed_function("function f() {}", p)
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


class TestEmbed:
    def test_softmax_rows(self, small):
        x = embed_contract(tree_of("function a() {}", "event E(uint x);", "modifier m() { _; }"), small).rows
        assert x.shape == (3, 5)
        assert np.all(x > 0)
        np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-6)

    def test_default_width(self):
        p = EncoderParams.initialize(seed=0)
        x = embed_contract(tree_of("function a() {}", "function b() {}", "function c() {}"), p)
        assert x.shape == (3, 512)

    def test_deterministic_and_identical_leaves(self, small):
        a = embed_function("mint(uint256)", small)
        assert np.array_equal(a, embed_function("mint(uint256)", small))
        again = EncoderParams.initialize(seed=3, vocab_size=64, dim=6, layers=2, out_dim=5)
        assert np.array_equal(a, embed_function("mint(uint256)", again))

    def test_single_leaf_matches_embed_function(self, small):
        x = embed_contract(tree_of("function only() public {}"), small).rows
        np.testing.assert_allclose(x[0], embed_function("function only() public {}", small), atol=1e-15)

    def test_reordering_files_reorders_rows(self, small):
        fa = ("a.sol", "contract A { function fa() public {} }")
        fb = ("b.sol", "contract B { function fb() public {} }")
        ab = embed_contract(extract_tree(SourceDocument((fa, fb))), small).rows
        ba = embed_contract(extract_tree(SourceDocument((fb, fa))), small).rows
        np.testing.assert_array_equal(ab, ba[::-1])

    def test_empty_contract(self, small):
        with pytest.raises(EmptyContractError):
            embed_contract(CodeTree(root=""), small)


class TestJointGradients:
    def test_backward_matches_finite_differences(self):
        enc = EncoderParams.initialize(seed=5, vocab_size=32, dim=4, layers=2, out_dim=6)
        tree = tree_of("function setFee(uint a) { fee = a; }", "event Mint(address to);")
        buckets = bucket_lists(tree, enc)
        target = np.random.default_rng(0).normal(size=(2, 6))

        def loss(arrays):
            p = EncoderParams(arrays, enc.vocab)
            out, _ = forward_buckets(buckets, p)
            return float(np.sum(out * target))

        out, cache = forward_buckets(buckets, enc)
        grads = backward_buckets(cache, target, enc)
        arrays = {k: v.astype(np.float64) for k, v in enc.arrays.items()}
        assert finite_diff_check(loss, arrays, grads, h=1e-5) < 1e-6


class TestInitialization:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_finite(self, seed):
        p = EncoderParams.initialize(seed=seed, vocab_size=32, dim=4, layers=2, out_dim=8)
        assert all(np.all(np.isfinite(v)) for v in p.arrays.values())
        assert p.word_table.shape[1] == p.dim == p.ff_layers[0][0].shape[0]
