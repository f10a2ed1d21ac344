package com.legacy.hash;

import java.security.MessageDigest;

public class TokenHasher {
    public byte[] hash(String token) throws Exception {
        String algorithm = "MD5";
        MessageDigest md = MessageDigest.getInstance(algorithm);
        return md.digest(token.getBytes("UTF-8"));
    }
}
