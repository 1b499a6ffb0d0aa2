import pytest
import torch


@pytest.fixture(scope="session")
def tiny_bridge():
    """A small randomly initialized BERT-style encoder with a character-level
    WordPiece vocab, built entirely offline."""
    from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
    from tokenizers.models import WordPiece
    from transformers import BertConfig, BertModel, BertTokenizerFast

    from xlinker_bridge.encoder import BridgeConfig, TransformerBridge

    letters = [chr(c) for c in range(ord("a"), ord("z") + 1)]
    vocab = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
             + letters + ["##" + c for c in letters]
             + [str(i) for i in range(10)] + ["##" + str(i) for i in range(10)]
             + ["the", "of", "president", "mexico", "office"])
    vocab_map = {tok: i for i, tok in enumerate(vocab)}
    backend = Tokenizer(WordPiece(vocab_map, unk_token="[UNK]"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.BertProcessing(
        sep=("[SEP]", vocab_map["[SEP]"]), cls=("[CLS]", vocab_map["[CLS]"]))
    tokenizer = BertTokenizerFast(tokenizer_object=backend, model_max_length=600,
                                  unk_token="[UNK]", pad_token="[PAD]",
                                  cls_token="[CLS]", sep_token="[SEP]",
                                  mask_token="[MASK]")
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
                        num_attention_heads=2, intermediate_size=64,
                        max_position_embeddings=600)
    model = BertModel(config)
    cfg = BridgeConfig(model="tiny-test", max_subwords=512, batch_size=4)
    return TransformerBridge(model, tokenizer, cfg)
