package com.messenger.crypto;

import java.security.KeyPair;
import java.security.KeyPairGenerator;

public class SessionKeys {
    public KeyPair dh() throws Exception {
        KeyPairGenerator gen = KeyPairGenerator.getInstance("DH");
        gen.initialize(2048);
        return gen.generateKeyPair();
    }
}
