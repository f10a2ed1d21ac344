package com.messenger.crypto;

import java.security.PrivateKey;
import java.security.Signature;

public class MessageSigner {
    public byte[] sign(PrivateKey key, byte[] message) throws Exception {
        Signature signer = Signature.getInstance("SHA256withRSA");
        signer.initSign(key);
        signer.update(message);
        return signer.sign();
    }

    public byte[] signLegacy(PrivateKey key, byte[] message) throws Exception {
        Signature signer = Signature.getInstance("SHA1withDSA");
        signer.initSign(key);
        signer.update(message);
        return signer.sign();
    }
}
